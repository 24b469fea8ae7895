//! Blackjack with an infinite deck, following the common textbook/Gymnasium
//! rules: the dealer draws to 17 or more (standing on soft 17), a player bust
//! is an immediate loss, naturals pay like any other win.
//!
//! The episode starts in a pre-deal state; whichever action is taken there
//! deals the opening hands. States are encoded as
//! `[phase, player_sum, dealer_showing, usable_ace]` with phase 0 = deal,
//! 1 = playing, 2 = finished (then `player_sum` holds 0 loss, 1 draw, 2 win).

use std::collections::HashMap;

use crate::error::Result;
use crate::mdp::{ActionId, Environment, Outcome, State, TabularModel};
use crate::rng::RngStream;

pub const STICK: ActionId = 0;
pub const HIT: ActionId = 1;

/// State visits per episode. A hand needs far fewer; the slack only pads
/// finished episodes with absorbing self-loops.
pub const HORIZON: usize = 24;

const CARD_P: f64 = 1.0 / 13.0;

fn draw_card(rng: &mut RngStream) -> u32 {
    (rng.below(13) as u32 + 1).min(10)
}

/// Every card value with its probability; 10 covers 10, J, Q, K.
fn card_values() -> [(u32, f64); 10] {
    let mut out = [(0, 0.0); 10];
    for (i, slot) in out.iter_mut().enumerate() {
        let v = i as u32 + 1;
        *slot = (v, if v == 10 { 4.0 * CARD_P } else { CARD_P });
    }
    out
}

/// A hand as (hard total counting aces as 1, holds an ace).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Hand {
    hard: u32,
    ace: bool,
}

impl Hand {
    fn add(self, card: u32) -> Hand {
        Hand {
            hard: self.hard + card,
            ace: self.ace || card == 1,
        }
    }

    fn usable_ace(self) -> bool {
        self.ace && self.hard + 10 <= 21
    }

    fn value(self) -> u32 {
        if self.usable_ace() {
            self.hard + 10
        } else {
            self.hard
        }
    }

    fn from_value(sum: u32, usable: bool) -> Hand {
        if usable {
            Hand {
                hard: sum - 10,
                ace: true,
            }
        } else {
            Hand {
                hard: sum,
                ace: false,
            }
        }
    }
}

fn deal_state() -> State {
    State::new(vec![0, 0, 0, 0])
}

fn playing_state(hand: Hand, dealer: u32) -> State {
    State::new(vec![1, hand.value() as i32, dealer as i32, hand.usable_ace() as i32])
}

fn finished_state(result: i32) -> State {
    State::new(vec![2, result, 0, 0])
}

fn result_reward(result: i32) -> f64 {
    f64::from(result - 1)
}

#[derive(Debug)]
pub struct Blackjack {
    model: TabularModel,
}

impl Blackjack {
    pub fn new() -> Result<Self> {
        let mut dealer_cache = HashMap::new();
        let model = TabularModel::explore(
            &deal_state(),
            2,
            |s| s.features()[0] == 2,
            |s, a| exact_outcomes(s, a, &mut dealer_cache),
        )?;
        Ok(Blackjack { model })
    }

    pub fn state(player_sum: u32, dealer_showing: u32, usable_ace: bool) -> State {
        State::new(vec![1, player_sum as i32, dealer_showing as i32, usable_ace as i32])
    }

    pub fn deal_state() -> State {
        deal_state()
    }
}

fn decode(s: &State) -> (Hand, u32) {
    let f = s.features();
    (Hand::from_value(f[1] as u32, f[3] != 0), f[2] as u32)
}

/// Result code (0 loss, 1 draw, 2 win) of standing on `player` against a
/// dealer who finishes on `dealer` (`None` for a bust).
fn stand_result(player: u32, dealer: Option<u32>) -> i32 {
    match dealer {
        None => 2,
        Some(d) if player > d => 2,
        Some(d) if player == d => 1,
        _ => 0,
    }
}

/// Distribution of the dealer's final total (`None` = bust) from a hand.
fn dealer_final(hand: Hand, cache: &mut HashMap<Hand, Vec<(Option<u32>, f64)>>) -> Vec<(Option<u32>, f64)> {
    if let Some(d) = cache.get(&hand) {
        return d.clone();
    }
    let v = hand.value();
    let out = if v > 21 {
        vec![(None, 1.0)]
    } else if v >= 17 {
        vec![(Some(v), 1.0)]
    } else {
        let mut acc: Vec<(Option<u32>, f64)> = Vec::new();
        for (card, p) in card_values() {
            for (fin, q) in dealer_final(hand.add(card), cache) {
                match acc.iter_mut().find(|(f, _)| *f == fin) {
                    Some(slot) => slot.1 += p * q,
                    None => acc.push((fin, p * q)),
                }
            }
        }
        acc
    };
    cache.insert(hand, out.clone());
    out
}

fn exact_outcomes(
    s: &State,
    a: ActionId,
    cache: &mut HashMap<Hand, Vec<(Option<u32>, f64)>>,
) -> Vec<(State, f64, f64)> {
    let f = s.features();
    if f[0] == 0 {
        let mut out = Vec::new();
        for (c1, p1) in card_values() {
            for (c2, p2) in card_values() {
                for (d, pd) in card_values() {
                    let hand = Hand { hard: 0, ace: false }.add(c1).add(c2);
                    out.push((playing_state(hand, d), p1 * p2 * pd, 0.0));
                }
            }
        }
        return out;
    }
    let (hand, dealer) = decode(s);
    if a == HIT {
        card_values()
            .into_iter()
            .map(|(c, p)| {
                let h = hand.add(c);
                if h.value() > 21 {
                    (finished_state(0), p, -1.0)
                } else {
                    (playing_state(h, dealer), p, 0.0)
                }
            })
            .collect()
    } else {
        let up = Hand { hard: 0, ace: false }.add(dealer);
        dealer_final(up, cache)
            .into_iter()
            .map(|(fin, p)| {
                let r = stand_result(hand.value(), fin);
                (finished_state(r), p, result_reward(r))
            })
            .collect()
    }
}

impl Environment for Blackjack {
    fn id(&self) -> String {
        "blackjack".into()
    }

    fn action_count(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        HORIZON
    }

    fn initial_state(&self) -> State {
        deal_state()
    }

    fn feature_dim(&self) -> usize {
        4
    }

    fn feature_scale(&self) -> Vec<f64> {
        vec![2.0, 21.0, 10.0, 1.0]
    }

    fn is_absorbing(&self, s: &State) -> bool {
        s.features()[0] == 2
    }

    fn transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> (State, f64) {
        if s.features()[0] == 0 {
            let hand = Hand { hard: 0, ace: false }
                .add(draw_card(rng))
                .add(draw_card(rng));
            let dealer = draw_card(rng);
            return (playing_state(hand, dealer), 0.0);
        }
        let (hand, dealer) = decode(s);
        if a == HIT {
            let h = hand.add(draw_card(rng));
            if h.value() > 21 {
                (finished_state(0), -1.0)
            } else {
                (playing_state(h, dealer), 0.0)
            }
        } else {
            let mut d = Hand { hard: 0, ace: false }.add(dealer);
            while d.value() < 17 {
                d = d.add(draw_card(rng));
            }
            let fin = if d.value() > 21 { None } else { Some(d.value()) };
            let r = stand_result(hand.value(), fin);
            (finished_state(r), result_reward(r))
        }
    }

    fn outcome(&self, last: &State) -> Outcome {
        let f = last.features();
        if f[0] != 2 {
            return "timeout";
        }
        match f[1] {
            0 => "loss",
            1 => "draw",
            _ => "win",
        }
    }

    fn outcome_labels(&self) -> &'static [Outcome] {
        &["loss", "draw", "win", "timeout"]
    }

    fn loss_draw_win(&self) -> Option<[Outcome; 3]> {
        Some(["loss", "draw", "win"])
    }

    fn model(&self) -> Option<&TabularModel> {
        Some(&self.model)
    }

    fn describe(&self, s: &State) -> String {
        let f = s.features();
        match f[0] {
            0 => "deal".into(),
            1 => format!(
                "sum={} dealer={} usable_ace={}",
                f[1],
                f[2],
                f[3] != 0
            ),
            _ => self.outcome(s).into(),
        }
    }
}
