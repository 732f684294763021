#include "doctest.h"

#include "coreflow/pointcloud.hpp"
