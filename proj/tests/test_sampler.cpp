#include "doctest.h"

#include "coreflow/sampler.hpp"
