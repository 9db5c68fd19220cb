#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace tnbp {

using cplx = std::complex<double>;
using LegId = std::int64_t;

struct Leg {
    LegId id = 0;
    int dim = 1;

    friend bool operator==(const Leg& a, const Leg& b) { return a.id == b.id && a.dim == b.dim; }
    friend bool operator!=(const Leg& a, const Leg& b) { return !(a == b); }
};

inline std::size_t legs_volume(const std::vector<Leg>& legs) {
    std::size_t n = 1;
    for (const auto& l : legs) n *= static_cast<std::size_t>(l.dim);
    return n;
}

// Row-major gather: returns data laid out in the leg order `order` (a
// permutation of the positions 0..rank-1 of `legs`).
inline std::vector<cplx> permute_data(const std::vector<Leg>& legs, const std::vector<cplx>& data,
                                      const std::vector<int>& order) {
    const int r = static_cast<int>(legs.size());
    std::vector<cplx> out(data.size());
    if (r == 0) {
        out = data;
        return out;
    }
    std::vector<std::size_t> stride(r, 1);
    for (int i = r - 2; i >= 0; --i) stride[i] = stride[i + 1] * legs[i + 1].dim;

    bool identity = true;
    for (int i = 0; i < r; ++i) identity = identity && order[i] == i;
    if (identity) return data;

    std::vector<int> dims(r);
    std::vector<std::size_t> src_stride(r);
    for (int i = 0; i < r; ++i) {
        dims[i] = legs[order[i]].dim;
        src_stride[i] = stride[order[i]];
    }
    std::vector<int> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = data[src];
        for (int i = r - 1; i >= 0; --i) {
            if (++idx[i] < dims[i]) {
                src += src_stride[i];
                break;
            }
            src -= src_stride[i] * (dims[i] - 1);
            idx[i] = 0;
        }
    }
    return out;
}

// Dense complex tensor with labelled legs kept sorted by id.
class Tensor {
public:
    Tensor() : data_(1, cplx(0.0)) {}

    Tensor(std::vector<Leg> legs, std::vector<cplx> data) : legs_(std::move(legs)), data_(std::move(data)) {
        for (const auto& l : legs_)
            if (l.dim < 1) throw Error(ErrorKind::DimensionMismatch, "leg " + std::to_string(l.id) + " has dim < 1");
        if (data_.size() != legs_volume(legs_))
            throw Error(ErrorKind::DimensionMismatch, "data length " + std::to_string(data_.size()) +
                                                          " != product of dims " + std::to_string(legs_volume(legs_)));
        canonicalize();
    }

    static Tensor scalar(cplx v) {
        Tensor t;
        t.data_[0] = v;
        return t;
    }

    static Tensor zeros(std::vector<Leg> legs) {
        std::vector<cplx> d(legs_volume(legs), cplx(0.0));
        return Tensor(std::move(legs), std::move(d));
    }

    static Tensor vector(LegId id, std::vector<cplx> v) {
        const int n = static_cast<int>(v.size());
        return Tensor({{id, n}}, std::move(v));
    }

    const std::vector<Leg>& legs() const { return legs_; }
    const std::vector<cplx>& data() const { return data_; }
    std::vector<cplx>& data() { return data_; }
    int rank() const { return static_cast<int>(legs_.size()); }
    std::size_t size() const { return data_.size(); }

    int position(LegId id) const {
        for (int i = 0; i < rank(); ++i)
            if (legs_[i].id == id) return i;
        return -1;
    }
    bool has_leg(LegId id) const { return position(id) >= 0; }
    int dim(LegId id) const {
        const int p = position(id);
        return p < 0 ? 0 : legs_[p].dim;
    }

    cplx value() const {
        if (rank() != 0) throw Error(ErrorKind::DimensionMismatch, "value() on a tensor of rank " + std::to_string(rank()));
        return data_[0];
    }

    // Entry at a multi-index given in canonical leg order.
    cplx at(const std::vector<int>& idx) const { return data_[offset(idx)]; }
    cplx& at(const std::vector<int>& idx) { return data_[offset(idx)]; }

    // Data laid out in an arbitrary leg order given by ids.
    std::vector<cplx> data_in_order(const std::vector<LegId>& ids) const {
        if (ids.size() != legs_.size()) throw Error(ErrorKind::DimensionMismatch, "leg order has wrong length");
        std::vector<int> order;
        order.reserve(ids.size());
        for (LegId id : ids) {
            const int p = position(id);
            if (p < 0) throw Error(ErrorKind::DimensionMismatch, "unknown leg " + std::to_string(id));
            order.push_back(p);
        }
        return permute_data(legs_, data_, order);
    }

    Tensor relabel(LegId from, LegId to) const {
        Tensor t = *this;
        const int p = t.position(from);
        if (p < 0) return t;
        if (from != to && t.has_leg(to)) throw Error(ErrorKind::LegCollision, "relabel target " + std::to_string(to) + " exists");
        t.legs_[p].id = to;
        t.canonicalize();
        return t;
    }

    Tensor conj() const {
        Tensor t = *this;
        for (auto& x : t.data_) x = std::conj(x);
        return t;
    }

    Tensor scaled(cplx s) const {
        Tensor t = *this;
        for (auto& x : t.data_) x *= s;
        return t;
    }

    double norm() const {
        double s = 0.0;
        for (const auto& x : data_) s += std::norm(x);
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& x : data_) m = std::max(m, std::abs(x));
        return m;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) { return a.legs_ == b.legs_ && a.data_ == b.data_; }

private:
    std::size_t offset(const std::vector<int>& idx) const {
        if (static_cast<int>(idx.size()) != rank()) throw Error(ErrorKind::DimensionMismatch, "index rank mismatch");
        std::size_t off = 0;
        for (int i = 0; i < rank(); ++i) {
            if (idx[i] < 0 || idx[i] >= legs_[i].dim) throw Error(ErrorKind::DimensionMismatch, "index out of range");
            off = off * legs_[i].dim + idx[i];
        }
        return off;
    }

    void canonicalize() {
        for (std::size_t i = 1; i < legs_.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (legs_[i].id == legs_[j].id)
                    throw Error(ErrorKind::LegCollision, "duplicate leg id " + std::to_string(legs_[i].id));
        std::vector<int> order(legs_.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return legs_[a].id < legs_[b].id; });
        bool sorted = true;
        for (std::size_t i = 0; i < order.size(); ++i) sorted = sorted && order[i] == static_cast<int>(i);
        if (sorted) return;
        data_ = permute_data(legs_, data_, order);
        std::vector<Leg> nl(legs_.size());
        for (std::size_t i = 0; i < order.size(); ++i) nl[i] = legs_[order[i]];
        legs_ = std::move(nl);
    }

    std::vector<Leg> legs_;
    std::vector<cplx> data_;
};

// Sums over every leg id shared by a and b; the result carries the symmetric
// difference of the two leg sets.
inline Tensor contract_pair(const Tensor& a, const Tensor& b) {
    std::vector<LegId> free_a, free_b, shared;
    std::size_t rows = 1, cols = 1, inner_dim = 1;
    for (const auto& l : a.legs()) {
        const int d = b.dim(l.id);
        if (d == 0) {
            free_a.push_back(l.id);
            rows *= l.dim;
        } else {
            if (d != l.dim)
                throw Error(ErrorKind::DimensionMismatch, "leg " + std::to_string(l.id) + " has dims " +
                                                              std::to_string(l.dim) + " and " + std::to_string(d));
            shared.push_back(l.id);
            inner_dim *= l.dim;
        }
    }
    for (const auto& l : b.legs())
        if (!a.has_leg(l.id)) {
            free_b.push_back(l.id);
            cols *= l.dim;
        }

    std::vector<LegId> order_a = free_a;
    order_a.insert(order_a.end(), shared.begin(), shared.end());
    std::vector<LegId> order_b = shared;
    order_b.insert(order_b.end(), free_b.begin(), free_b.end());
    const std::vector<cplx> da = a.data_in_order(order_a);
    const std::vector<cplx> db = b.data_in_order(order_b);

    using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> ma(da.data(), rows, inner_dim);
    Eigen::Map<const RowMat> mb(db.data(), inner_dim, cols);
    std::vector<cplx> out(rows * cols);
    Eigen::Map<RowMat> mo(out.data(), rows, cols);
    mo.noalias() = ma * mb;

    std::vector<Leg> legs;
    legs.reserve(free_a.size() + free_b.size());
    for (LegId id : free_a) legs.push_back({id, a.dim(id)});
    for (LegId id : free_b) legs.push_back({id, b.dim(id)});
    return Tensor(std::move(legs), std::move(out));
}

inline Tensor outer(const Tensor& a, const Tensor& b) {
    for (const auto& l : a.legs())
        if (b.has_leg(l.id)) throw Error(ErrorKind::LegCollision, "outer product on shared leg " + std::to_string(l.id));
    return contract_pair(a, b);
}

// Bilinear full contraction of two tensors over identical leg sets.
inline cplx inner(const Tensor& a, const Tensor& b) {
    if (a.legs() != b.legs()) throw Error(ErrorKind::DimensionMismatch, "inner() requires identical leg sets");
    cplx s = 0.0;
    const auto& da = a.data();
    const auto& db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) s += da[i] * db[i];
    return s;
}

// Merges the listed legs (in the listed order, row-major) into one leg `new_id`.
inline Tensor fuse_legs(const Tensor& t, const std::vector<LegId>& group, LegId new_id) {
    int fused_dim = 1;
    for (LegId id : group) {
        const int d = t.dim(id);
        if (d == 0) throw Error(ErrorKind::DimensionMismatch, "fuse: missing leg " + std::to_string(id));
        fused_dim *= d;
    }
    std::vector<Leg> final_legs;
    for (const auto& l : t.legs())
        if (std::find(group.begin(), group.end(), l.id) == group.end()) {
            if (l.id == new_id) throw Error(ErrorKind::LegCollision, "fuse target id in use");
            final_legs.push_back(l);
        }
    final_legs.push_back({new_id, fused_dim});
    std::sort(final_legs.begin(), final_legs.end(), [](const Leg& a, const Leg& b) { return a.id < b.id; });
    std::vector<LegId> order;
    for (const auto& l : final_legs) {
        if (l.id == new_id)
            order.insert(order.end(), group.begin(), group.end());
        else
            order.push_back(l.id);
    }
    return Tensor(final_legs, t.data_in_order(order));
}

// Inverse of fuse_legs.
inline Tensor split_leg(const Tensor& t, LegId id, const std::vector<Leg>& parts) {
    const int p = t.position(id);
    if (p < 0) throw Error(ErrorKind::DimensionMismatch, "split: missing leg " + std::to_string(id));
    if (static_cast<int>(legs_volume(parts)) != t.legs()[p].dim)
        throw Error(ErrorKind::DimensionMismatch, "split: volume mismatch");
    std::vector<Leg> legs;
    for (int i = 0; i < t.rank(); ++i) {
        if (i == p)
            legs.insert(legs.end(), parts.begin(), parts.end());
        else
            legs.push_back(t.legs()[i]);
    }
    return Tensor(std::move(legs), t.data());
}

}  // namespace tnbp
