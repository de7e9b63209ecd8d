#pragma once

#include "knnlab/corruption.hpp"
#include "knnlab/dataspace.hpp"
#include "knnlab/errors.hpp"
#include "knnlab/lab/config.hpp"
#include "knnlab/lab/csv_data.hpp"
#include "knnlab/lab/cv.hpp"
#include "knnlab/lab/experiment.hpp"
#include "knnlab/lab/parallel.hpp"
#include "knnlab/lab/rate_fit.hpp"
#include "knnlab/lab/results.hpp"
#include "knnlab/neighbors.hpp"
#include "knnlab/rng.hpp"
#include "knnlab/theory.hpp"
#include "knnlab/variants.hpp"
