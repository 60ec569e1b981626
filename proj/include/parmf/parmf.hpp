#ifndef PARMF_PARMF_HPP
#define PARMF_PARMF_HPP

// Umbrella header.

#include "parmf/als.hpp"
#include "parmf/bench.hpp"
#include "parmf/ccd.hpp"
#include "parmf/dense.hpp"
#include "parmf/io.hpp"
#include "parmf/model.hpp"
#include "parmf/report.hpp"
#include "parmf/runtime.hpp"
#include "parmf/sparse.hpp"
#include "parmf/types.hpp"

#endif  // PARMF_PARMF_HPP
