#pragma once

#include "fedrisk/balance.hpp"
#include "fedrisk/dataset.hpp"
#include "fedrisk/experiment.hpp"
#include "fedrisk/federation.hpp"
#include "fedrisk/metrics.hpp"
#include "fedrisk/models.hpp"
#include "fedrisk/preprocess.hpp"
