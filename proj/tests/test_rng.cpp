#include "doctest.h"

#include "coreflow/rng.hpp"
