#ifndef DTUQ_DTUQ_HPP
#define DTUQ_DTUQ_HPP

// Core library.
#include "dtuq/distributions.hpp"
#include "dtuq/error.hpp"
#include "dtuq/estimators.hpp"
#include "dtuq/format.hpp"
#include "dtuq/inference.hpp"
#include "dtuq/loss.hpp"
#include "dtuq/minimize.hpp"
#include "dtuq/model.hpp"
#include "dtuq/parallel.hpp"
#include "dtuq/risk.hpp"
#include "dtuq/rng.hpp"

#endif  // DTUQ_DTUQ_HPP
