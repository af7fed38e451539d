// Compile-coverage translation unit: every public header must build on its
// own in a single TU with no extra includes.
#include "latthom/corrector.hpp"
#include "latthom/environment.hpp"
#include "latthom/errors.hpp"
#include "latthom/estimators.hpp"
#include "latthom/experiments.hpp"
#include "latthom/field_io.hpp"
#include "latthom/fit.hpp"
#include "latthom/green.hpp"
#include "latthom/lattice.hpp"
#include "latthom/probability.hpp"
#include "latthom/rng.hpp"
#include "latthom/sensitivity.hpp"
#include "latthom/solver.hpp"
