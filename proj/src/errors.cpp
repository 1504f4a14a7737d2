#include "tss/errors.hpp"

namespace tss {

void throw_validation(const std::string& message) { throw ValidationError(message); }

}  // namespace tss
