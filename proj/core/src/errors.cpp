#include "rantwin/errors.hpp"

#include <utility>

namespace rantwin {

ConfigError::ConfigError(const std::string& message, std::string field)
    : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

TrainingError::TrainingError(const std::string& message, int epoch)
    : NumericError("epoch " + std::to_string(epoch) + ": " + message), epoch_(epoch) {}

}  // namespace rantwin
