#include "sketchchain/common.hpp"
