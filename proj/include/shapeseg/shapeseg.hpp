#pragma once

#include "shapeseg/affinity.hpp"
#include "shapeseg/errors.hpp"
#include "shapeseg/eval.hpp"
#include "shapeseg/graph_merge.hpp"
#include "shapeseg/instance_io.hpp"
#include "shapeseg/kernel.hpp"
#include "shapeseg/metrics.hpp"
#include "shapeseg/parallel.hpp"
#include "shapeseg/pipeline.hpp"
#include "shapeseg/png_io.hpp"
#include "shapeseg/raster.hpp"
#include "shapeseg/rng.hpp"
#include "shapeseg/synth.hpp"
