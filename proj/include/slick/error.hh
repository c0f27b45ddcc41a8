#ifndef SLICK_ERROR_HH
#define SLICK_ERROR_HH

#include <cstdint>
#include <stdexcept>
#include <string>

namespace slick {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Host could not reserve an arena (or the enclave budget is spent).
class AllocationFailure : public Error {
  public:
    using Error::Error;
};

class ElementInitError : public Error {
  public:
    ElementInitError(std::string element, std::string reason)
        : Error(element + ": " + reason), _element(std::move(element)),
          _reason(std::move(reason)) {}

    const std::string &element() const { return _element; }
    const std::string &reason() const { return _reason; }

  private:
    std::string _element;
    std::string _reason;
};

} // namespace slick

#endif
