#pragma once

#include "parfft/bench.hpp"
#include "parfft/common.hpp"
#include "parfft/decomp.hpp"
#include "parfft/dense.hpp"
#include "parfft/fft.hpp"
#include "parfft/io.hpp"
#include "parfft/plan.hpp"
#include "parfft/redistribute.hpp"
#include "parfft/subarray.hpp"
#include "parfft/transport.hpp"
