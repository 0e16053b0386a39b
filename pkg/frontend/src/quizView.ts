/** Quiz view model: question menu on the left, answer menu on the right.
 * Pure data in/out so the DOM binding stays a thin layer. */

import type { QuizItemPayload } from './protocol.js';

export interface GradedAnswer {
  item: string;
  choice: number;
  correct: boolean;
}

export interface QuestionEntry {
  id: string;
  label: string;
  answered: boolean;
  selected: boolean;
}

export interface AnswerEntry {
  index: number;
  text: string;
  chosen: boolean;
  verdict: 'correct' | 'wrong' | null;
  locked: boolean;
}

export interface QuizPanels {
  questions: QuestionEntry[];  // left menu
  answers: AnswerEntry[];      // right menu for the selected question
  score: number;
  complete: boolean;
}

export class QuizViewModel {
  private items: QuizItemPayload[] = [];
  private graded = new Map<string, GradedAnswer>();
  private selectedId: string | null = null;
  private score = 0;

  updateItems(items: QuizItemPayload[], score: number): void {
    this.items = items;
    this.score = score;
    if (this.selectedId === null && items.length > 0) {
      this.selectedId = items[0].id;
    }
  }

  recordGrade(grade: GradedAnswer): void {
    this.graded.set(grade.item, grade);
  }

  selectQuestion(id: string): void {
    if (this.items.some((i) => i.id === id)) this.selectedId = id;
  }

  /** Answer index to submit, or null when the click must be ignored
   * (already answered questions stay locked). */
  chooseAnswer(index: number): { item: string; choice: number } | null {
    const item = this.items.find((i) => i.id === this.selectedId);
    if (!item || item.answered || this.graded.has(item.id)) return null;
    if (index < 0 || index >= item.choices.length) return null;
    return { item: item.id, choice: index };
  }

  panels(): QuizPanels {
    const questions = this.items.map((i) => ({
      id: i.id,
      label: i.prompt,
      answered: i.answered || this.graded.has(i.id),
      selected: i.id === this.selectedId,
    }));
    const current = this.items.find((i) => i.id === this.selectedId);
    const grade = current ? this.graded.get(current.id) : undefined;
    const answers: AnswerEntry[] = current
      ? current.choices.map((text, index) => ({
          index,
          text,
          chosen: grade !== undefined && grade.choice === index,
          verdict: grade !== undefined && grade.choice === index
            ? (grade.correct ? 'correct' : 'wrong')
            : null,
          locked: current.answered || grade !== undefined,
        }))
      : [];
    const complete = this.items.length > 0
      && this.items.every((i) => i.answered || this.graded.has(i.id));
    return { questions, answers, score: this.score, complete };
  }
}
