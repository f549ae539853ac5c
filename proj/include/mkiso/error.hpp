#pragma once

#include <stdexcept>
#include <string>

namespace mkiso {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SignatureMismatch : public Error {
 public:
  using Error::Error;
};

/// A tangent space (subspace, cell, sample) whose Gram matrix is not positive definite.
class NotSpacelike : public Error {
 public:
  using Error::Error;
};

/// Gram matrix is positive definite but too close to singular to trust.
class IllConditioned : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

class InvalidMesh : public Error {
 public:
  using Error::Error;
};

class MeshDegenerate : public InvalidMesh {
 public:
  using InvalidMesh::InvalidMesh;
};

class NotConnected : public InvalidMesh {
 public:
  using InvalidMesh::InvalidMesh;
};

class BoundaryCurvatureUnavailable : public Error {
 public:
  using Error::Error;
};

class SolverFailure : public Error {
 public:
  using Error::Error;
};

class SlopeCapExceeded : public Error {
 public:
  using Error::Error;
};

class TimelikeHViolation : public Error {
 public:
  using Error::Error;
};

class FHInapplicable : public Error {
 public:
  using Error::Error;
};

class RadiusTooLarge : public Error {
 public:
  using Error::Error;
};

class EstimateInconclusive : public Error {
 public:
  using Error::Error;
};

class UnknownSurface : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SurjectivityViolation : public Error {
 public:
  using Error::Error;
};

class BoundViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace mkiso
