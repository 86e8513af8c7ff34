#ifndef PANELKIT_ERRORS_HPP
#define PANELKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace panelkit {

// Error families map 1:1 onto CLI exit codes (1/2/3).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class EstimationError : public std::runtime_error {
public:
    explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace panelkit

#endif
