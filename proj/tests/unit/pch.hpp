#pragma once

#include <torch/torch.h>

// c10 logging defines CHECK; the tests use doctest's.
#undef CHECK
