#pragma once

#include "capx/harness/checks.hpp"
#include "capx/harness/config.hpp"
#include "capx/harness/family.hpp"
#include "capx/harness/fixtures.hpp"
#include "capx/harness/oracles.hpp"
#include "capx/harness/report.hpp"
#include "capx/harness/runner.hpp"
