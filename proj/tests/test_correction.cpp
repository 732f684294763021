#include "doctest.h"

#include "coreflow/correction.hpp"
