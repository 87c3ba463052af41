#pragma once

#include "stgat/data.hpp"
#include "stgat/errors.hpp"
#include "stgat/gradcheck.hpp"
#include "stgat/hash.hpp"
#include "stgat/layers.hpp"
#include "stgat/manifest.hpp"
#include "stgat/metrics.hpp"
#include "stgat/model.hpp"
#include "stgat/plot.hpp"
#include "stgat/rng.hpp"
#include "stgat/tensor.hpp"
#include "stgat/training.hpp"
#include "stgat/window.hpp"
