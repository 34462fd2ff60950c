// SPDX-License-Identifier: Apache-2.0
/// Umbrella header.
#pragma once

#include "modl/adam.hpp"
#include "modl/common.hpp"
#include "modl/config.hpp"
#include "modl/dataset.hpp"
#include "modl/evaluation.hpp"
#include "modl/experiment.hpp"
#include "modl/grad_check.hpp"
#include "modl/graph.hpp"
#include "modl/labels.hpp"
#include "modl/model.hpp"
#include "modl/model_spec.hpp"
#include "modl/neighborhood.hpp"
#include "modl/objectives.hpp"
#include "modl/tensor.hpp"
#include "modl/trainer.hpp"
