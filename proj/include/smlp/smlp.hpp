#pragma once

// Umbrella header: the whole library.

#include "smlp/config.hpp"
#include "smlp/datamodel.hpp"
#include "smlp/dates.hpp"
#include "smlp/errors.hpp"
#include "smlp/features.hpp"
#include "smlp/harness.hpp"
#include "smlp/ingest.hpp"
#include "smlp/network.hpp"
#include "smlp/optim.hpp"
