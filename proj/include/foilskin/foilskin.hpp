#pragma once

#include "foilskin/errors.hpp"
#include "foilskin/geometry.hpp"
#include "foilskin/sensing.hpp"
#include "foilskin/ingestion.hpp"
#include "foilskin/estimator.hpp"
#include "foilskin/plant.hpp"
#include "foilskin/control.hpp"
#include "foilskin/metrics.hpp"
#include "foilskin/session.hpp"
#include "foilskin/harness.hpp"
