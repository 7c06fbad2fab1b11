#pragma once

#include <stdexcept>
#include <string>

namespace perfpatch {

/// Base class for every error raised by the library. `kind()` is the stable
/// name that shows up in logs and JSON artifacts.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define PERFPATCH_DEFINE_ERROR(Name)                                      \
    class Name : public Error {                                           \
    public:                                                               \
        explicit Name(const std::string& what) : Error(#Name, what) {}    \
    }

// corpus mining
PERFPATCH_DEFINE_ERROR(RepositoryUnreadable);
PERFPATCH_DEFINE_ERROR(BranchNotFound);
// source model
PERFPATCH_DEFINE_ERROR(UnparseableFile);
PERFPATCH_DEFINE_ERROR(AbstractionParseError);
PERFPATCH_DEFINE_ERROR(TokenizationFailure);
// examples
PERFPATCH_DEFINE_ERROR(FocalTooLarge);
PERFPATCH_DEFINE_ERROR(MarkerCollision);
// suggestions
PERFPATCH_DEFINE_ERROR(BackendFailure);
PERFPATCH_DEFINE_ERROR(Timeout);
PERFPATCH_DEFINE_ERROR(MalformedResponse);
// validation
PERFPATCH_DEFINE_ERROR(SpliceFailure);
PERFPATCH_DEFINE_ERROR(StageTimeout);
PERFPATCH_DEFINE_ERROR(CommandNotFound);
// benchmarks
PERFPATCH_DEFINE_ERROR(DegenerateSample);
PERFPATCH_DEFINE_ERROR(BenchmarkNameMismatch);
PERFPATCH_DEFINE_ERROR(SchemaError);
PERFPATCH_DEFINE_ERROR(UnitError);
// orchestration
PERFPATCH_DEFINE_ERROR(ConfigError);
PERFPATCH_DEFINE_ERROR(StageFailed);
PERFPATCH_DEFINE_ERROR(IoError);

#undef PERFPATCH_DEFINE_ERROR

}  // namespace perfpatch
