#include "doctest.h"

#include "coreflow/velocity.hpp"
