#pragma once

#include "sofari/core_model.hpp"
#include "sofari/debias.hpp"
#include "sofari/error_cov.hpp"
#include "sofari/manifold.hpp"
#include "sofari/precision.hpp"
#include "sofari/report.hpp"
#include "sofari/rng.hpp"
#include "sofari/simulate.hpp"
#include "sofari/sofar.hpp"

#define SOFARI_VERSION "0.1.0"
