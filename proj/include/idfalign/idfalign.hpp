#pragma once

#include "idfalign/cascade.hpp"
#include "idfalign/dataset.hpp"
#include "idfalign/encoding.hpp"
#include "idfalign/forest.hpp"
#include "idfalign/geometry.hpp"
#include "idfalign/image.hpp"
#include "idfalign/image_io.hpp"
#include "idfalign/model_io.hpp"
#include "idfalign/parallel.hpp"
#include "idfalign/pixel_features.hpp"
#include "idfalign/random.hpp"
#include "idfalign/report.hpp"
#include "idfalign/shape_init.hpp"
#include "idfalign/solver.hpp"
