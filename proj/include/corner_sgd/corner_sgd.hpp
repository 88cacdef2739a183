#pragma once

#include "contour.hpp"
#include "corner_theory.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "io.hpp"
#include "mittag_leffler.hpp"
#include "parallel.hpp"
#include "poly.hpp"
#include "propagator.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "spectrum.hpp"
#include "trainer.hpp"
