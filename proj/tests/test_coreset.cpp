#include "doctest.h"

#include "coreflow/coreset.hpp"
