#ifndef VISCID_VISCID_HPP
#define VISCID_VISCID_HPP

// Numerical core. Configuration, reports and the command line live in
// viscid/app.hpp, which additionally needs OpenSSL and the vendored headers.

#include "viscid/analysis.hpp"
#include "viscid/error.hpp"
#include "viscid/fft.hpp"
#include "viscid/flux.hpp"
#include "viscid/grid.hpp"
#include "viscid/initial_data.hpp"
#include "viscid/kernel.hpp"
#include "viscid/oracles.hpp"
#include "viscid/solver.hpp"

#endif  // VISCID_VISCID_HPP
