#pragma once

#include "bp.hpp"
#include "cluster.hpp"
#include "csv.hpp"
#include "cumulant.hpp"
#include "errors.hpp"
#include "graph.hpp"
#include "io.hpp"
#include "loops.hpp"
#include "models.hpp"
#include "network.hpp"
#include "observables.hpp"
#include "parallel.hpp"
#include "tensor.hpp"
