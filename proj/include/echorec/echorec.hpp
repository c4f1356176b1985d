#pragma once

#include "dataset_io.hpp"
#include "dictlearn.hpp"
#include "eval.hpp"
#include "kspace.hpp"
#include "patches.hpp"
#include "phantom.hpp"
#include "png_io.hpp"
#include "prox.hpp"
#include "rng.hpp"
#include "tune.hpp"
#include "types.hpp"

namespace echorec {
inline constexpr const char* kVersion = "0.1.0";
}
