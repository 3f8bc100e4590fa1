#pragma once

#include "pesaerl/config.hpp"
#include "pesaerl/embedding.hpp"
#include "pesaerl/environments.hpp"
#include "pesaerl/errors.hpp"
#include "pesaerl/harness.hpp"
#include "pesaerl/ncs.hpp"
#include "pesaerl/policy.hpp"
#include "pesaerl/random.hpp"
#include "pesaerl/surrogate.hpp"
