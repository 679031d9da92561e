#pragma once

#include "spatialrisk/error.hpp"
#include "spatialrisk/numkernel.hpp"
#include "spatialrisk/distributions.hpp"
#include "spatialrisk/delimited.hpp"
#include "spatialrisk/keyed.hpp"
#include "spatialrisk/ingest.hpp"
#include "spatialrisk/pca.hpp"
#include "spatialrisk/regression.hpp"
#include "spatialrisk/diagnostics.hpp"
#include "spatialrisk/forest.hpp"
#include "spatialrisk/ranking.hpp"
#include "spatialrisk/choropleth.hpp"
#include "spatialrisk/tables.hpp"
#include "spatialrisk/config.hpp"
#include "spatialrisk/synth.hpp"
#include "spatialrisk/pipeline.hpp"
