#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mtgan {

// Error taxonomy. Callers catch Error for anything raised by the library;
// the subclasses map to distinct failure kinds surfaced by the CLI.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class PreconditionError : public Error { public: using Error::Error; };
class IngestionError : public Error { public: using Error::Error; };
class RegistrationError : public Error { public: using Error::Error; };
class LookupError : public Error { public: using Error::Error; };
class IntegrityError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class UsageError : public Error { public: using Error::Error; };

// Raised when a training loop hits a non-finite loss. Carries a diagnostic
// snapshot (iteration, lr, loss components) already formatted as JSON.
class TrainingError : public Error {
public:
    TrainingError(const std::string& msg, std::string diagnostics_json)
        : Error(msg), diagnostics(std::move(diagnostics_json)) {}
    std::string diagnostics;
};

using Rng = std::mt19937_64;

// Derives a substream seed from (seed, tag). Streams for independent
// purposes (init, data, noise, ...) must not collide or alias when the
// base seed changes by 1, hence the FNV-1a fold instead of plain xor.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index);

Rng make_rng(std::uint64_t seed);
Rng make_rng(std::uint64_t seed, std::string_view tag);
Rng make_rng(std::uint64_t seed, std::string_view tag, std::uint64_t index);

// Number of threads used for GEMM-heavy paths. Resolved once per process:
// MTGAN_THREADS env var if set, else hardware concurrency (capped at 8).
int compute_threads();
void init_threading();

}  // namespace mtgan
