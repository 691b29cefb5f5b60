#pragma once

#include "talbot/error.hpp"
#include "talbot/fft.hpp"
#include "talbot/fit.hpp"
#include "talbot/quadrature.hpp"
#include "talbot/spectral_field.hpp"
#include "talbot/function_spec.hpp"
#include "talbot/norms.hpp"
#include "talbot/evolution.hpp"
#include "talbot/revivals.hpp"
#include "talbot/fractal_dim.hpp"
#include "talbot/bourgain.hpp"
