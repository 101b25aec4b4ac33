//! List and higher-order predicates written in Prolog. Calls into these are
//! traced as single leaves.

use std::sync::LazyLock;

use crate::program::{parse_program, Program};

const SOURCE: &str = r#"
member(X, [X|_]).
member(X, [_|T]) :- member(X, T).

'$append'([], L, L).
'$append'([H|T], L, [H|R]) :- '$append'(T, L, R).

select(X, [X|T], T).
select(X, [H|T], [H|R]) :- select(X, T, R).

selectchk(X, L, R) :- select(X, L, R), !.

'$nth_enum'([H|T], B, I, E) :-
    (   I = B, E = H
    ;   B1 is B + 1, '$nth_enum'(T, B1, I, E)
    ).

'$length'([], N, N).
'$length'([_|T], N, N0) :- N1 is N0 + 1, '$length'(T, N, N1).

'$arg_enum'(N, T, A) :- functor(T, _, Ar), between(1, Ar, N), arg(N, T, A).

last([X|Xs], L) :- '$last'(Xs, X, L).
'$last'([], L, L).
'$last'([X|Xs], _, L) :- '$last'(Xs, X, L).

nextto(X, Y, [X,Y|_]).
nextto(X, Y, [_|T]) :- nextto(X, Y, T).

subtract([], _, []).
subtract([H|T], L, R) :-
    ( memberchk(H, L) -> R = R1 ; R = [H|R1] ),
    subtract(T, L, R1).

delete([], _, []).
delete([H|T], X, R) :-
    ( H \= X -> R = [H|R1] ; R = R1 ),
    delete(T, X, R1).

intersection([], _, []).
intersection([X|T], L, I) :-
    ( memberchk(X, L) -> I = [X|R] ; I = R ),
    intersection(T, L, R).

union([], L, L).
union([H|T], L, R) :-
    ( memberchk(H, L) -> R = R1 ; R = [H|R1] ),
    union(T, L, R1).

permutation([], []).
permutation(L, [X|P]) :- select(X, L, R), permutation(R, P).

exclude(_, [], []).
exclude(P, [X|Xs], R) :-
    ( call(P, X) -> R = R1 ; R = [X|R1] ),
    exclude(P, Xs, R1).

include(_, [], []).
include(P, [X|Xs], R) :-
    ( call(P, X) -> R = [X|R1] ; R = R1 ),
    include(P, Xs, R1).

partition(_, [], [], []).
partition(P, [X|Xs], I, E) :-
    (   call(P, X) -> I = [X|I1], E = E1
    ;   I = I1, E = [X|E1]
    ),
    partition(P, Xs, I1, E1).

foldl(G, L, A0, A) :- '$foldl'(L, G, A0, A).
'$foldl'([], _, A, A).
'$foldl'([X|Xs], G, A0, A) :- call(G, X, A0, A1), '$foldl'(Xs, G, A1, A).

foldl(G, L1, L2, A0, A) :- '$foldl'(L1, L2, G, A0, A).
'$foldl'([], [], _, A, A).
'$foldl'([X|Xs], [Y|Ys], G, A0, A) :- call(G, X, Y, A0, A1), '$foldl'(Xs, Ys, G, A1, A).

foldl(G, L1, L2, L3, A0, A) :- '$foldl'(L1, L2, L3, G, A0, A).
'$foldl'([], [], [], _, A, A).
'$foldl'([X|Xs], [Y|Ys], [Z|Zs], G, A0, A) :-
    call(G, X, Y, Z, A0, A1),
    '$foldl'(Xs, Ys, Zs, G, A1, A).

predsort(P, L, Sorted) :-
    length(L, N),
    '$predsort'(N, P, L, _, S), !,
    Sorted = S.

'$predsort'(0, _, L, L, []) :- !.
'$predsort'(1, _, [X|L], L, [X]) :- !.
'$predsort'(2, P, [X1,X2|L], L, R) :- !,
    call(P, Delta, X1, X2),
    '$predsort_pair'(Delta, X1, X2, R).
'$predsort'(N, P, L1, L3, R) :-
    N1 is N // 2,
    N2 is N - N1,
    '$predsort'(N1, P, L1, L2, R1),
    '$predsort'(N2, P, L2, L3, R2),
    '$predmerge'(P, R1, R2, R).

'$predsort_pair'(<, X1, X2, [X1,X2]).
'$predsort_pair'(=, X1, _, [X1]).
'$predsort_pair'(>, X1, X2, [X2,X1]).

'$predmerge'(_, [], R, R) :- !.
'$predmerge'(_, R, [], R) :- !.
'$predmerge'(P, [H1|T1], [H2|T2], R) :-
    call(P, Delta, H1, H2), !,
    '$predmerge_step'(Delta, P, H1, H2, T1, T2, R).

'$predmerge_step'(<, P, H1, H2, T1, T2, [H1|R]) :- '$predmerge'(P, T1, [H2|T2], R).
'$predmerge_step'(=, P, H1, _, T1, T2, [H1|R]) :- '$predmerge'(P, T1, T2, R).
'$predmerge_step'(>, P, H1, H2, T1, T2, [H2|R]) :- '$predmerge'(P, [H1|T1], T2, R).

'$maplist'(_, []).
'$maplist'(G, [A|As]) :- call(G, A), '$maplist'(G, As).
'$maplist'(_, [], []).
'$maplist'(G, [A|As], [B|Bs]) :- call(G, A, B), '$maplist'(G, As, Bs).
'$maplist'(_, [], [], []).
'$maplist'(G, [A|As], [B|Bs], [C|Cs]) :- call(G, A, B, C), '$maplist'(G, As, Bs, Cs).
'$maplist'(_, [], [], [], []).
'$maplist'(G, [A|As], [B|Bs], [C|Cs], [D|Ds]) :-
    call(G, A, B, C, D),
    '$maplist'(G, As, Bs, Cs, Ds).
'$maplist'(_, [], [], [], [], []).
'$maplist'(G, [A|As], [B|Bs], [C|Cs], [D|Ds], [E|Es]) :-
    call(G, A, B, C, D, E),
    '$maplist'(G, As, Bs, Cs, Ds, Es).
'$maplist'(_, [], [], [], [], [], []).
'$maplist'(G, [A|As], [B|Bs], [C|Cs], [D|Ds], [E|Es], [F|Fs]) :-
    call(G, A, B, C, D, E, F),
    '$maplist'(G, As, Bs, Cs, Ds, Es, Fs).
"#;

static LIBRARY: LazyLock<Program> = LazyLock::new(|| parse_program(SOURCE).expect("library source parses"));

pub(crate) fn program() -> &'static Program {
    &LIBRARY
}
