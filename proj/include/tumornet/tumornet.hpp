#pragma once

#include "tumornet/adamax.hpp"
#include "tumornet/checkpoint.hpp"
#include "tumornet/commands.hpp"
#include "tumornet/config.hpp"
#include "tumornet/dataset.hpp"
#include "tumornet/error.hpp"
#include "tumornet/fixtures.hpp"
#include "tumornet/gradcheck.hpp"
#include "tumornet/history.hpp"
#include "tumornet/image.hpp"
#include "tumornet/kernels.hpp"
#include "tumornet/layers.hpp"
#include "tumornet/loss.hpp"
#include "tumornet/metrics.hpp"
#include "tumornet/model_spec.hpp"
#include "tumornet/network.hpp"
#include "tumornet/rng.hpp"
#include "tumornet/tensor.hpp"
#include "tumornet/train.hpp"
