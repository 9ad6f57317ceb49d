#pragma once

#include "limbreg/error.hpp"
#include "limbreg/raster.hpp"
#include "limbreg/image_io.hpp"
#include "limbreg/segmentation.hpp"
#include "limbreg/orientation.hpp"
#include "limbreg/ffrc.hpp"
#include "limbreg/registration.hpp"
#include "limbreg/metrics.hpp"
#include "limbreg/synthgen.hpp"
#include "limbreg/serialize.hpp"
#include "limbreg/pipeline.hpp"
