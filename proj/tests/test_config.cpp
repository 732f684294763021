#include "doctest.h"

#include "coreflow/config.hpp"
