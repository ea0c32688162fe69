#pragma once

#include <stdexcept>
#include <string>

namespace faq {

// Error categories. The CLI maps each category to a distinct exit code, so
// new values must be appended, never reordered.
enum class ErrCode {
    invalid_argument,  // bad dims, bad config values, precondition failures
    shape_mismatch,    // tensor shape disagreement
    token_range,       // token id >= vocab_size
    io,                // unreadable/unwritable path
    bad_magic,         // file does not start with the expected magic bytes
    truncated,         // file shorter than its declared contents
    checksum_mismatch, // payload checksum does not match
    unknown_dtype,     // manifest names a dtype this build does not know
    format,            // manifest/header is structurally invalid
};

const char* err_code_name(ErrCode code);

class Error : public std::runtime_error {
public:
    Error(ErrCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrCode code() const { return code_; }

private:
    ErrCode code_;
};

[[noreturn]] inline void fail(ErrCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace faq
