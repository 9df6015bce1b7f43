#pragma once

#include "agu/common.hpp"
#include "agu/eval.hpp"
#include "agu/graph.hpp"
#include "agu/graph_io.hpp"
#include "agu/models.hpp"
#include "agu/neighbors.hpp"
#include "agu/sparse.hpp"
#include "agu/tensor.hpp"
#include "agu/unlearn.hpp"
