#pragma once

#include "msfa/archive.hpp"
#include "msfa/augment.hpp"
#include "msfa/coco.hpp"
#include "msfa/dataset.hpp"
#include "msfa/descriptor.hpp"
#include "msfa/error.hpp"
#include "msfa/feature_stack.hpp"
#include "msfa/ingest.hpp"
#include "msfa/parallel.hpp"
#include "msfa/raster.hpp"
#include "msfa/stage_plan.hpp"
#include "msfa/stats.hpp"
