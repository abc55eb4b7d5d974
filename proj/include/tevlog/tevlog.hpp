#pragma once

#include "tevlog/anchor.hpp"
#include "tevlog/bytes.hpp"
#include "tevlog/chain.hpp"
#include "tevlog/crypto.hpp"
#include "tevlog/merkle.hpp"
#include "tevlog/persistence.hpp"
#include "tevlog/reachability.hpp"
#include "tevlog/readout.hpp"
#include "tevlog/simulator.hpp"
#include "tevlog/verifier.hpp"
