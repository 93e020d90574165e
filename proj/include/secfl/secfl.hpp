#pragma once

// Umbrella include for the whole library.
#include "secfl/common.hpp"
#include "secfl/harness/config.hpp"
#include "secfl/harness/csv.hpp"
#include "secfl/harness/dataset.hpp"
#include "secfl/harness/experiment.hpp"
#include "secfl/harness/protocol_suite.hpp"
#include "secfl/model.hpp"
#include "secfl/pruning.hpp"
#include "secfl/secagg/graph.hpp"
#include "secfl/secagg/keys.hpp"
#include "secfl/secagg/mask.hpp"
#include "secfl/secagg/messages.hpp"
#include "secfl/secagg/ring.hpp"
#include "secfl/secagg/shamir.hpp"
#include "secfl/straggler.hpp"
#include "secfl/timing.hpp"
