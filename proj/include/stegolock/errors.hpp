#pragma once

#include <stdexcept>
#include <string>

namespace stegolock {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

// Payload does not fit (plaintext too long, cover too small).
class CapacityError : public Error {
public:
    using Error::Error;
};

class AuthenticationFailure : public Error {
public:
    AuthenticationFailure() : Error("authentication failure: MIC mismatch") {}
};

class MalformedEnvelope : public Error {
public:
    using Error::Error;
};

class MalformedStego : public Error {
public:
    using Error::Error;
};

class MalformedFrame : public Error {
public:
    using Error::Error;
};

class Disconnect : public Error {
public:
    using Error::Error;
};

class CounterExhausted : public Error {
public:
    CounterExhausted() : Error("message counter exhausted") {}
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace stegolock
