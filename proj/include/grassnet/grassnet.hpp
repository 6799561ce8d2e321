// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "grassnet/checkpoint.hpp"
#include "grassnet/data.hpp"
#include "grassnet/errors.hpp"
#include "grassnet/gradcheck.hpp"
#include "grassnet/init.hpp"
#include "grassnet/label_graph.hpp"
#include "grassnet/latent_graph.hpp"
#include "grassnet/losses.hpp"
#include "grassnet/metrics.hpp"
#include "grassnet/model.hpp"
#include "grassnet/optim.hpp"
#include "grassnet/spectral.hpp"
#include "grassnet/spectral_gcn.hpp"
#include "grassnet/synthetic.hpp"
#include "grassnet/targets.hpp"
#include "grassnet/tensor.hpp"
#include "grassnet/text_fusion.hpp"
#include "grassnet/train.hpp"
