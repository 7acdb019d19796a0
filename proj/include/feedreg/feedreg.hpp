#pragma once

#include "feedreg/error.hpp"
#include "feedreg/evaluation.hpp"
#include "feedreg/features.hpp"
#include "feedreg/feedback.hpp"
#include "feedreg/filters.hpp"
#include "feedreg/geometry.hpp"
#include "feedreg/image.hpp"
#include "feedreg/matching.hpp"
#include "feedreg/stitching.hpp"
#include "feedreg/synthetic.hpp"
