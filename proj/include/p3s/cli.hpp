#pragma once

#include <iosfwd>

namespace p3s::cli {

// Entry point of the `p3s` tool. Expected failures print a single line
// "error[<category>]: <message>" to `err` and return a nonzero code: 2 for
// usage errors, 1 for everything else.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace p3s::cli
