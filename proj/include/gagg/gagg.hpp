#pragma once

// Graph-attentive feature aggregation for speaker embeddings: complete-graph
// GAT, gPool node pruning, readout, margin-softmax training, and EER scoring.

#include "gagg/aggregator.hpp"
#include "gagg/autodiff.hpp"
#include "gagg/checkpoint.hpp"
#include "gagg/errors.hpp"
#include "gagg/eval.hpp"
#include "gagg/gat.hpp"
#include "gagg/gpool.hpp"
#include "gagg/io.hpp"
#include "gagg/losses.hpp"
#include "gagg/matrix.hpp"
#include "gagg/optimizer.hpp"
#include "gagg/random.hpp"
#include "gagg/readout.hpp"
#include "gagg/training.hpp"
