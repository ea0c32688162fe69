#include "faq/error.hpp"

namespace faq {

const char* err_code_name(ErrCode code) {
    switch (code) {
        case ErrCode::invalid_argument: return "invalid_argument";
        case ErrCode::shape_mismatch: return "shape_mismatch";
        case ErrCode::token_range: return "token_range";
        case ErrCode::io: return "io";
        case ErrCode::bad_magic: return "bad_magic";
        case ErrCode::truncated: return "truncated";
        case ErrCode::checksum_mismatch: return "checksum_mismatch";
        case ErrCode::unknown_dtype: return "unknown_dtype";
        case ErrCode::format: return "format";
    }
    return "unknown";
}

} // namespace faq
