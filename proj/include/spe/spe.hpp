#pragma once

#include "spe/attention.hpp"
#include "spe/bench.hpp"
#include "spe/core.hpp"
#include "spe/dual.hpp"
#include "spe/encoder.hpp"
#include "spe/fisheye.hpp"
#include "spe/image.hpp"
#include "spe/image_io.hpp"
#include "spe/parallel.hpp"
#include "spe/pos_encoding.hpp"
#include "spe/sampler.hpp"
#include "spe/sector_patch.hpp"
#include "spe/tensor.hpp"
#include "spe/viz.hpp"
