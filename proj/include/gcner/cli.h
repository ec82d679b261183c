#ifndef GCNER_CLI_H_
#define GCNER_CLI_H_

// Command-line front end.
//
//   gcner <train|eval|predict|validate|stats|ablate> [--config FILE] [flags]
//
// Exit codes: 0 ok, 1 unexpected failure, 2 configuration error, 3 data
// error, 4 non-finite values during training.

#include <ostream>

namespace gcner {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace gcner

#endif  // GCNER_CLI_H_
