#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace styleflow {

/// Failure categories. The CLI prints the category name as the first token of
/// its one-line error report, so names are stable identifiers.
enum class ErrorKind {
    dimension,
    numeric,
    contract,
    config,
    data,
    vocabulary,
    missing_file,
    io,
    checkpoint_version,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::contract: return "contract";
        case ErrorKind::config: return "config";
        case ErrorKind::data: return "data";
        case ErrorKind::vocabulary: return "vocabulary";
        case ErrorKind::missing_file: return "missing_file";
        case ErrorKind::io: return "io";
        case ErrorKind::checkpoint_version: return "checkpoint_version";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define STYLEFLOW_DEFINE_ERROR(Name, Kind)                                     \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& message) : Error(Kind, message) {}    \
    };

STYLEFLOW_DEFINE_ERROR(DimensionError, ErrorKind::dimension)
STYLEFLOW_DEFINE_ERROR(NumericError, ErrorKind::numeric)
STYLEFLOW_DEFINE_ERROR(ContractError, ErrorKind::contract)
STYLEFLOW_DEFINE_ERROR(ConfigError, ErrorKind::config)
STYLEFLOW_DEFINE_ERROR(DataError, ErrorKind::data)
STYLEFLOW_DEFINE_ERROR(VocabularyError, ErrorKind::vocabulary)
STYLEFLOW_DEFINE_ERROR(MissingFileError, ErrorKind::missing_file)
STYLEFLOW_DEFINE_ERROR(IoError, ErrorKind::io)
STYLEFLOW_DEFINE_ERROR(CheckpointVersionError, ErrorKind::checkpoint_version)

#undef STYLEFLOW_DEFINE_ERROR

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ContractError(message);
}

}  // namespace styleflow
