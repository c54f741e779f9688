#pragma once

#include "tgcn/checkpoint.hpp"
#include "tgcn/edge_list.hpp"
#include "tgcn/eval.hpp"
#include "tgcn/experiment.hpp"
#include "tgcn/graph.hpp"
#include "tgcn/model.hpp"
#include "tgcn/split.hpp"
#include "tgcn/synth.hpp"
#include "tgcn/tensor3.hpp"
#include "tgcn/tensor_ops.hpp"
#include "tgcn/training.hpp"
