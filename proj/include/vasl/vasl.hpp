#pragma once

// Everything: tensors and layers, the network, data pipeline, training,
// metrics and gradient checks.

#include "vasl/allocator.hpp"
#include "vasl/attention.hpp"
#include "vasl/checkpoint.hpp"
#include "vasl/config.hpp"
#include "vasl/conv.hpp"
#include "vasl/dataset.hpp"
#include "vasl/error.hpp"
#include "vasl/evaluation.hpp"
#include "vasl/extractor.hpp"
#include "vasl/fusion.hpp"
#include "vasl/gradcheck.hpp"
#include "vasl/image_io.hpp"
#include "vasl/loss.hpp"
#include "vasl/metrics.hpp"
#include "vasl/model.hpp"
#include "vasl/nn.hpp"
#include "vasl/norm.hpp"
#include "vasl/ops.hpp"
#include "vasl/optim.hpp"
#include "vasl/pool.hpp"
#include "vasl/preprocess.hpp"
#include "vasl/rng.hpp"
#include "vasl/synth.hpp"
#include "vasl/tensor.hpp"
#include "vasl/train.hpp"
