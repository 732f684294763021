#include "doctest.h"

#include "coreflow/theory.hpp"
