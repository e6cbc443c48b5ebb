#pragma once

#include "ewcdr/analysis.hpp"
#include "ewcdr/commands.hpp"
#include "ewcdr/config.hpp"
#include "ewcdr/dataset.hpp"
#include "ewcdr/errors.hpp"
#include "ewcdr/gradcheck.hpp"
#include "ewcdr/idx.hpp"
#include "ewcdr/importance.hpp"
#include "ewcdr/io.hpp"
#include "ewcdr/metrics.hpp"
#include "ewcdr/network.hpp"
#include "ewcdr/regularizer.hpp"
#include "ewcdr/scenario.hpp"
#include "ewcdr/tensor.hpp"
#include "ewcdr/trainer.hpp"
