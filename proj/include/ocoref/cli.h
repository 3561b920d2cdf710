#ifndef OCOREF_CLI_H_
#define OCOREF_CLI_H_

#include <iosfwd>

#include "ocoref/online.h"

namespace ocoref {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `ocoref` tool with injectable streams.
int run_cli(int argc, const char* const* argv, std::istream& in,
            std::ostream& out, std::ostream& err);

// Reads `{"speaker": str, "tokens": [...]}` lines from `in` and writes one
// TurnResult line per utterance, flushed before the next read. A blank line
// starts a new dialogue; a malformed line yields `{"error": ...}` and the
// session continues.
void stream_session(std::istream& in, std::ostream& out, TurnScorer& scorer,
                    const DecodeConfig& config);

}  // namespace ocoref

#endif  // OCOREF_CLI_H_
