#pragma once

// Umbrella header: the whole library.

#include "covsel/cds.hpp"
#include "covsel/config.hpp"
#include "covsel/core.hpp"
#include "covsel/error.hpp"
#include "covsel/format.hpp"
#include "covsel/harness.hpp"
#include "covsel/io.hpp"
#include "covsel/log.hpp"
#include "covsel/ocsvm.hpp"
#include "covsel/parallel.hpp"
#include "covsel/prng.hpp"
#include "covsel/report.hpp"
#include "covsel/strategy.hpp"
#include "covsel/synthetic.hpp"
#include "covsel/tree.hpp"
#include "covsel/version.hpp"
