// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace kumo
{

/// Root of every error the library throws.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

#define KUMO_DEFINE_ERROR(Name, Base)        \
    class Name : public Base                 \
    {                                        \
    public:                                  \
        using Base::Base;                    \
    }

// env-model
KUMO_DEFINE_ERROR(SchemaError, Error);
KUMO_DEFINE_ERROR(DuplicateName, SchemaError);
KUMO_DEFINE_ERROR(DanglingTruthReference, SchemaError);
KUMO_DEFINE_ERROR(DuplicateEnvironment, Error);
KUMO_DEFINE_ERROR(InvalidConfig, Error);
KUMO_DEFINE_ERROR(UnknownEnvironment, Error);

// taskgen
KUMO_DEFINE_ERROR(InvalidParams, Error);
KUMO_DEFINE_ERROR(InsufficientUniverse, Error);
KUMO_DEFINE_ERROR(InsufficientActions, Error);
KUMO_DEFINE_ERROR(GenerationExhausted, Error);

// oracle
KUMO_DEFINE_ERROR(StateSpaceTooLarge, Error);
KUMO_DEFINE_ERROR(TooLargeForBruteForce, Error);

// simulator
KUMO_DEFINE_ERROR(InvalidTask, Error);
KUMO_DEFINE_ERROR(SessionTerminated, Error);
KUMO_DEFINE_ERROR(AgentTransportError, Error);

// metrics
KUMO_DEFINE_ERROR(EmptyInput, Error);
KUMO_DEFINE_ERROR(DegenerateOptimal, Error);
KUMO_DEFINE_ERROR(MissingOptimal, Error);
KUMO_DEFINE_ERROR(ZeroVariance, Error);

// analysis
KUMO_DEFINE_ERROR(EmptyGraph, Error);
KUMO_DEFINE_ERROR(SingleComponent, Error);
KUMO_DEFINE_ERROR(SplitInvalid, Error);
KUMO_DEFINE_ERROR(DegenerateMargins, Error);
KUMO_DEFINE_ERROR(DegenerateTable, Error);

// llm-gen
KUMO_DEFINE_ERROR(TransportError, Error);
KUMO_DEFINE_ERROR(AuthError, TransportError);
KUMO_DEFINE_ERROR(RateLimited, TransportError);
KUMO_DEFINE_ERROR(GenerationFailed, Error);
KUMO_DEFINE_ERROR(PersistentlyInvalid, Error);
KUMO_DEFINE_ERROR(VerdictUnparseable, Error);

// service
KUMO_DEFINE_ERROR(AuthFailure, Error);
KUMO_DEFINE_ERROR(InsufficientTaskPool, Error);
KUMO_DEFINE_ERROR(UnknownSession, Error);
KUMO_DEFINE_ERROR(UnknownAction, Error);
KUMO_DEFINE_ERROR(UnknownTruth, Error);
KUMO_DEFINE_ERROR(IoError, Error);

#undef KUMO_DEFINE_ERROR

} // namespace kumo
