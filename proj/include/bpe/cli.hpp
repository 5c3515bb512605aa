#pragma once

#include <ostream>

namespace bpe {

/// Exit codes: 0 ok, 2 config error, 3 every verdict undetermined, 4 tolerance failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bpe
