#pragma once

#include "vladvsa/aggregation.hpp"
#include "vladvsa/checkpoint.hpp"
#include "vladvsa/cli.hpp"
#include "vladvsa/config.hpp"
#include "vladvsa/data.hpp"
#include "vladvsa/gradcheck.hpp"
#include "vladvsa/gradsuite.hpp"
#include "vladvsa/harness.hpp"
#include "vladvsa/matrix.hpp"
#include "vladvsa/metrics.hpp"
#include "vladvsa/mlp.hpp"
#include "vladvsa/model.hpp"
#include "vladvsa/objective.hpp"
#include "vladvsa/rng.hpp"
#include "vladvsa/text.hpp"
#include "vladvsa/vocabulary.hpp"
