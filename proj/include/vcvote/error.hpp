#pragma once

#include <stdexcept>
#include <string>

namespace vcvote {

enum class Errc {
    invalid_argument,
    out_of_range,
    io,
    parse,
    unexpected_eof,
    bad_magic,
    version_mismatch,
    dim_mismatch,
    bad_dtype,
    non_finite,
    validation,
    integrity,
    checksum,
    infeasible,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::invalid_argument: return "invalid argument";
        case Errc::out_of_range: return "out of range";
        case Errc::io: return "i/o error";
        case Errc::parse: return "parse error";
        case Errc::unexpected_eof: return "unexpected end of stream";
        case Errc::bad_magic: return "bad magic";
        case Errc::version_mismatch: return "version mismatch";
        case Errc::dim_mismatch: return "dimension mismatch";
        case Errc::bad_dtype: return "unsupported dtype";
        case Errc::non_finite: return "non-finite value";
        case Errc::validation: return "validation error";
        case Errc::integrity: return "integrity error";
        case Errc::checksum: return "checksum mismatch";
        case Errc::infeasible: return "infeasible";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace vcvote
