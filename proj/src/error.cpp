#include "sparseport/error.hpp"

namespace sparseport {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Data: return "data error";
        case ErrorKind::InsufficientData: return "insufficient data";
        case ErrorKind::Spec: return "model specification error";
        case ErrorKind::Config: return "configuration error";
        case ErrorKind::Domain: return "domain error";
        case ErrorKind::DegenerateConstraints: return "degenerate constraints";
        case ErrorKind::Numerical: return "numerical error";
        case ErrorKind::Infeasible: return "infeasible";
        case ErrorKind::Unbounded: return "unbounded";
        case ErrorKind::Size: return "size error";
        case ErrorKind::InternalConsistency: return "internal consistency error";
    }
    return "error";
}

}  // namespace sparseport
