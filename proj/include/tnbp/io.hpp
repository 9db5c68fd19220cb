#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bp.hpp"
#include "network.hpp"

namespace tnbp {

// JSON interchange format. Bond legs are named by edge id, the physical leg
// by -1. Tensor data is row-major in the listed leg order. Errors carry a
// JSON pointer to the first offending value.

using json = nlohmann::json;

inline constexpr long long kFilePhysicalLeg = -1;

struct LoadedNetwork {
    TensorNetwork tn;
    std::optional<MessageSet> messages;
    std::vector<long long> vertex_ids;  // file id of internal vertex i
};

namespace io_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::InvalidInput, (path.empty() ? std::string("/") : path) + ": " + what);
}

inline std::string child(const std::string& path, const std::string& key) {
    std::string k;
    for (char c : key) {
        if (c == '~') k += "~0";
        else if (c == '/') k += "~1";
        else k += c;
    }
    return path + "/" + k;
}

inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const json& member(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) fail(path, "missing key \"" + key + "\"");
    return obj.at(key);
}

inline long long as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<long long>();
}

inline const json& as_array(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array");
    return j;
}

inline const json& as_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    return j;
}

inline long long parse_key(const std::string& key, const std::string& path) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(key, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != key.size() || std::to_string(v) != key) fail(path, "key is not a vertex id");
    return v;
}

inline std::vector<cplx> read_complex(const json& obj, const std::string& path, std::size_t expected) {
    const std::string pre = child(path, "re"), pim = child(path, "im");
    const json& re = as_array(member(obj, path, "re"), pre);
    const json& im = as_array(member(obj, path, "im"), pim);
    if (re.size() != expected) fail(pre, "length " + std::to_string(re.size()) + ", expected " + std::to_string(expected));
    if (im.size() != expected) fail(pim, "length " + std::to_string(im.size()) + ", expected " + std::to_string(expected));
    std::vector<cplx> out(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        if (!re[i].is_number()) fail(child(pre, i), "expected a number");
        if (!im[i].is_number()) fail(child(pim, i), "expected a number");
        const double a = re[i].get<double>(), b = im[i].get<double>();
        if (!std::isfinite(a)) fail(child(pre, i), "not finite");
        if (!std::isfinite(b)) fail(child(pim, i), "not finite");
        out[i] = {a, b};
    }
    return out;
}

inline void write_complex(json& obj, const std::vector<cplx>& data, const std::string& path) {
    json re = json::array(), im = json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i].real()) || !std::isfinite(data[i].imag()))
            throw Error(ErrorKind::NumericalCollapse, path + "/" + std::to_string(i) + ": non-finite value");
        re.push_back(data[i].real());
        im.push_back(data[i].imag());
    }
    obj["re"] = std::move(re);
    obj["im"] = std::move(im);
}

}  // namespace io_detail

inline std::string directed_key(long long from, long long to) { return std::to_string(from) + "->" + std::to_string(to); }

inline json network_to_json(const TensorNetwork& tn, const MessageSet* ms = nullptr) {
    using namespace io_detail;
    tn.validate();
    json j;
    j["vertices"] = json::array();
    for (int v = 0; v < tn.num_vertices(); ++v) j["vertices"].push_back(v);
    j["edges"] = json::array();
    for (const auto& e : tn.graph.edges())
        j["edges"].push_back({{"id", e.id}, {"u", e.u}, {"v", e.v}, {"dim", tn.bond_dims[e.id]}});
    j["tensors"] = json::object();
    j["physical"] = json::object();
    for (int v = 0; v < tn.num_vertices(); ++v) {
        const Tensor& t = tn.tensors[v];
        json legs = json::array(), dims = json::array();
        for (const auto& l : t.legs()) {
            legs.push_back(l.id == phys_leg(v) ? kFilePhysicalLeg : static_cast<long long>(l.id));
            dims.push_back(l.dim);
        }
        json tj{{"legs", std::move(legs)}, {"dims", std::move(dims)}};
        write_complex(tj, t.data(), "/tensors/" + std::to_string(v));
        j["tensors"][std::to_string(v)] = std::move(tj);
        if (tn.phys_dims[v] > 0) j["physical"][std::to_string(v)] = tn.phys_dims[v];
    }
    if (ms) {
        if (static_cast<int>(ms->msg.size()) != 2 * tn.num_edges())
            throw Error(ErrorKind::InvalidInput, "message set does not match the network");
        json m = json::object();
        for (const auto& e : tn.graph.edges()) {
            for (int side = 0; side < 2; ++side) {
                const int from = side == 0 ? e.u : e.v, to = e.other(from);
                json mj = json::object();
                write_complex(mj, ms->msg[2 * e.id + side].data(), "/messages/" + directed_key(from, to));
                m[directed_key(from, to)] = std::move(mj);
            }
        }
        j["messages"] = std::move(m);
        j["message_convention"] = ms->convention;
    }
    return j;
}

inline LoadedNetwork network_from_json(const json& j) {
    using namespace io_detail;
    static const std::set<std::string> known = {"vertices", "edges", "tensors", "physical", "messages",
                                                "message_convention", "meta"};
    as_object(j, "");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) fail(child("", it.key()), "unknown key");

    LoadedNetwork out;
    std::map<long long, int> vindex;
    {
        const json& vs = as_array(member(j, "", "vertices"), "/vertices");
        for (std::size_t i = 0; i < vs.size(); ++i) {
            const long long id = as_int(vs[i], child("/vertices", i));
            if (!vindex.emplace(id, static_cast<int>(i)).second) fail(child("/vertices", i), "duplicate vertex id");
            out.vertex_ids.push_back(id);
        }
    }
    const int n = static_cast<int>(vindex.size());
    auto vertex_of = [&](const json& jv, const std::string& path) {
        const long long id = as_int(jv, path);
        const auto it = vindex.find(id);
        if (it == vindex.end()) fail(path, "unknown vertex " + std::to_string(id));
        return it->second;
    };

    Graph g(n, {});
    std::vector<int> bond_dims;
    std::map<long long, int> eindex;
    {
        const json& es = as_array(member(j, "", "edges"), "/edges");
        for (std::size_t i = 0; i < es.size(); ++i) {
            const std::string p = child("/edges", i);
            as_object(es[i], p);
            const long long id = as_int(member(es[i], p, "id"), child(p, "id"));
            if (id < 0) fail(child(p, "id"), "edge id must be nonnegative");
            if (!eindex.emplace(id, static_cast<int>(i)).second) fail(child(p, "id"), "duplicate edge id");
            const int u = vertex_of(member(es[i], p, "u"), child(p, "u"));
            const int v = vertex_of(member(es[i], p, "v"), child(p, "v"));
            if (u == v) fail(p, "self-loop");
            if (g.edge_between(u, v) >= 0) fail(p, "parallel edge");
            const long long dim = as_int(member(es[i], p, "dim"), child(p, "dim"));
            if (dim < 1 || dim > (1 << 20)) fail(child(p, "dim"), "dimension out of range");
            g.add_edge(u, v);
            bond_dims.push_back(static_cast<int>(dim));
        }
    }

    std::vector<int> phys(n, 0);
    if (j.contains("physical")) {
        const json& pj = as_object(j.at("physical"), "/physical");
        for (auto it = pj.begin(); it != pj.end(); ++it) {
            const std::string p = child("/physical", it.key());
            const long long id = parse_key(it.key(), p);
            const auto vi = vindex.find(id);
            if (vi == vindex.end()) fail(p, "unknown vertex " + it.key());
            const long long d = as_int(it.value(), p);
            if (d < 1 || d > (1 << 20)) fail(p, "dimension out of range");
            phys[vi->second] = static_cast<int>(d);
        }
    }

    std::vector<Tensor> tensors(n);
    {
        const json& ts = as_object(member(j, "", "tensors"), "/tensors");
        std::vector<bool> seen(n, false);
        for (auto it = ts.begin(); it != ts.end(); ++it) {
            const std::string p = child("/tensors", it.key());
            const auto vi = vindex.find(parse_key(it.key(), p));
            if (vi == vindex.end()) fail(p, "unknown vertex " + it.key());
            const int v = vi->second;
            seen[v] = true;
            const json& tj = as_object(it.value(), p);
            const json& legs = as_array(member(tj, p, "legs"), child(p, "legs"));
            const json& dims = as_array(member(tj, p, "dims"), child(p, "dims"));
            if (legs.size() != dims.size()) fail(child(p, "dims"), "length differs from legs");
            std::vector<Leg> ls;
            std::set<LegId> used;
            std::size_t volume = 1;
            for (std::size_t k = 0; k < legs.size(); ++k) {
                const std::string pl = child(child(p, "legs"), k), pd = child(child(p, "dims"), k);
                const long long fid = as_int(legs[k], pl);
                const long long d = as_int(dims[k], pd);
                Leg l;
                if (fid == kFilePhysicalLeg) {
                    if (phys[v] == 0) fail(pl, "physical leg on a vertex without a physical dimension");
                    if (d != phys[v]) fail(pd, "does not match the physical dimension");
                    l = {phys_leg(v), phys[v]};
                } else {
                    const auto ei = eindex.find(fid);
                    if (ei == eindex.end()) fail(pl, "unknown edge " + std::to_string(fid));
                    const Edge& e = g.edge(ei->second);
                    if (e.u != v && e.v != v) fail(pl, "edge " + std::to_string(fid) + " is not incident to this vertex");
                    if (d != bond_dims[e.id]) fail(pd, "does not match the edge dimension");
                    l = {e.id, bond_dims[e.id]};
                }
                if (!used.insert(l.id).second) fail(pl, "leg listed twice");
                ls.push_back(l);
                volume *= static_cast<std::size_t>(l.dim);
            }
            if (static_cast<int>(used.size()) != g.degree(v) + (phys[v] > 0 ? 1 : 0))
                fail(child(p, "legs"), "legs do not cover every incident edge" +
                                           std::string(phys[v] > 0 ? " and the physical leg" : ""));
            tensors[v] = Tensor(std::move(ls), read_complex(tj, p, volume));
        }
        for (int v = 0; v < n; ++v)
            if (!seen[v]) fail("/tensors", "no tensor for vertex " + std::to_string(out.vertex_ids[v]));
    }
    out.tn = make_network(std::move(g), std::move(bond_dims), std::move(tensors), std::move(phys));

    if (j.contains("messages")) {
        const json& mj = as_object(j.at("messages"), "/messages");
        MessageSet ms;
        const Graph& gr = out.tn.graph;
        ms.msg.resize(2 * gr.num_edges());
        std::vector<bool> have(ms.msg.size(), false);
        for (auto it = mj.begin(); it != mj.end(); ++it) {
            const std::string p = child("/messages", it.key());
            const auto arrow = it.key().find("->");
            if (arrow == std::string::npos) fail(p, "key must look like \"u->v\"");
            const auto a = vindex.find(parse_key(it.key().substr(0, arrow), p));
            const auto b = vindex.find(parse_key(it.key().substr(arrow + 2), p));
            if (a == vindex.end() || b == vindex.end()) fail(p, "unknown vertex");
            const int e = gr.edge_between(a->second, b->second);
            if (e < 0) fail(p, "no such edge");
            const int d = directed_index(gr, e, a->second);
            have[d] = true;
            ms.msg[d] = Tensor::vector(e, read_complex(as_object(it.value(), p), p, out.tn.bond_dims[e]));
        }
        for (std::size_t d = 0; d < have.size(); ++d)
            if (!have[d]) {
                const Edge& e = gr.edge(static_cast<int>(d / 2));
                const int from = d % 2 == 0 ? e.u : e.v;
                fail("/messages", "missing message " + directed_key(out.vertex_ids[from], out.vertex_ids[e.other(from)]));
            }
        if (j.contains("message_convention")) {
            if (!j.at("message_convention").is_string()) fail("/message_convention", "expected a string");
            ms.convention = j.at("message_convention").get<std::string>();
        }
        ms.refresh(gr);
        out.messages = std::move(ms);
    }
    return out;
}

inline std::string network_to_string(const TensorNetwork& tn, const MessageSet* ms = nullptr) {
    return network_to_json(tn, ms).dump(1) + "\n";
}

inline LoadedNetwork network_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::InvalidInput, std::string("parse error: ") + e.what());
    }
    return network_from_json(j);
}

inline LoadedNetwork load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return network_from_string(ss.str());
    } catch (const Error& e) {
        throw Error(e.kind(), path + ":" + std::string(e.what()).substr(std::string(error_name(e.kind())).size() + 1));
    }
}

inline void save_network(const std::string& path, const TensorNetwork& tn, const MessageSet* ms = nullptr) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
    out << network_to_string(tn, ms);
}

}  // namespace tnbp
