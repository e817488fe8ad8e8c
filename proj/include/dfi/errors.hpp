#pragma once

#include <stdexcept>
#include <string>

namespace dfi {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A matrix that must be inverted failed the relative pivot test.
class SingularMatrix : public Error {
public:
    using Error::Error;
};

class SingularPrior : public SingularMatrix {
public:
    using SingularMatrix::SingularMatrix;
};

class SingularNoise : public SingularMatrix {
public:
    using SingularMatrix::SingularMatrix;
};

/// R Phi R^T + N is not invertible.
class SingularGram : public SingularMatrix {
public:
    using SingularMatrix::SingularMatrix;
};

class OutOfWindow : public Error {
public:
    using Error::Error;
};

class RequiresLambdaZero : public Error {
public:
    using Error::Error;
};

class UndefinedRatio : public Error {
public:
    using Error::Error;
};

class NonFiniteValue : public Error {
public:
    using Error::Error;
};

class ChainDiverged : public Error {
public:
    using Error::Error;
};

class NotAGridNode : public Error {
public:
    using Error::Error;
};

}  // namespace dfi
