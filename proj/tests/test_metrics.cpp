#include "doctest.h"

#include "coreflow/metrics.hpp"
