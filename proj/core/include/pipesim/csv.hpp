#pragma once

#include <string>

namespace pipesim {

// Shortest decimal text that round-trips to the same double. Locale
// independent, so emitted files are byte-stable.
std::string format_double(double x);

}  // namespace pipesim
