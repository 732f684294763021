#include "doctest.h"

#include "coreflow/dataset.hpp"
